//! The construction engine: per-node strategy state, the stage loop, and the
//! element flow toward B.
//!
//! Elements climb toward B through "collector" queues. The only resting
//! places on a climb are the collector of a Q-node whose c edge lies on the
//! path below it, and B itself; every other hop is a pass-through. A D-node's
//! own witness always enters the collector of its parent Q-node. Committed
//! S-strategies short-circuit the climb by putting matching elements into B
//! directly ("pulls").

use std::collections::{BTreeMap, BTreeSet};

use crate::adversary::{MirrorTargets, Roster, RtSet, SetSpec, TrackingRule};
use crate::trace::{set_ids, ConstructionConfig, Event, Trace, TraceHeader};
use crate::tree::{
    higher_priority, left_of, render_g, Outcome, Path, Regime, Requirement, Side, TreeBuilder,
};

pub const TRACE_VERSION: u32 = 1;

#[derive(Clone, Debug, Default)]
pub struct NodeState {
    pub req: Option<Requirement>,
    // Witness-based strategies (D and S children).
    pub witness: Option<Witness>,
    pub emitted: bool,
    pub committed: bool,
    pub donor: Option<Path>,
    pub sharp_done: BTreeSet<u64>,
    // Q strategies.
    pub r: BTreeSet<u64>,
    pub r_all: BTreeSet<u64>,
    pub r_epoch: u32,
    pub m: BTreeMap<u64, u32>,
    pub resolved: BTreeSet<u64>,
    pub pipe: BTreeMap<u64, u32>,
    pub pipe_moved: BTreeSet<u64>,
    pub p_inf: BTreeMap<u64, u32>,
    pub p_inf_bound: Option<u64>,
    pub had_entrant: bool,
    pub last_early: bool,
    pub dirty: bool,
    pub reset_count: u32,
}

#[derive(Clone, Copy, Debug)]
pub struct Witness {
    pub x: u64,
    pub seq: u64,
}

#[derive(Clone, Debug)]
enum PoolSource {
    Omega,
    R(Path),
    Pinf(Path),
}

struct PoolView {
    source: PoolSource,
    removed: BTreeSet<u64>,
}

pub struct Construction {
    pub cfg: ConstructionConfig,
    pub roster: Roster,
    pub tree: TreeBuilder,
    stage: u32,
    nodes: BTreeMap<Path, NodeState>,
    used: BTreeSet<u64>,
    b: BTreeMap<u64, u32>,
    rt_v: Vec<RtSet>,
    rt_x: Vec<RtSet>,
    rt_y: Vec<RtSet>,
    rr_flip: Vec<bool>,
    mirrors: Vec<(usize, MirrorTargets)>,
    /// B entrants awaiting a tracking-pair side assignment (next stage).
    pending_assign: Vec<(u64, u32)>,
    restraints: BTreeMap<u64, BTreeSet<Path>>,
    /// Delayed committed emissions (general regime): due stage -> items.
    pending_sharp: BTreeMap<u32, Vec<(u64, Path)>>,
    sharp_scheduled: BTreeMap<u64, Path>,
    events: Vec<Event>,
    pick_seq: u64,
    /// Registry of currently committed strategies, to keep sweeps cheap.
    committed_reg: BTreeSet<Path>,
    /// Largest value any node has touched; fresh scans stop just above it.
    ceiling: u64,
}

impl Construction {
    pub fn new(cfg: ConstructionConfig, roster: Roster) -> Self {
        let tree = TreeBuilder::new(cfg.regime, roster.v.len());
        let rt_v: Vec<RtSet> = roster.v.iter().map(RtSet::from_spec).collect();
        let rt_x: Vec<RtSet> = roster
            .pair
            .iter()
            .map(|p| RtSet::from_schedule(&p.x_entries))
            .collect();
        let rt_y: Vec<RtSet> = roster
            .pair
            .iter()
            .map(|p| RtSet::from_schedule(&p.y_entries))
            .collect();
        let rr_flip = vec![false; roster.pair.len()];
        let mirrors = roster
            .v
            .iter()
            .enumerate()
            .filter_map(|(i, s)| match s {
                SetSpec::Mirror { targets } => Some((i, targets.clone())),
                _ => None,
            })
            .collect();
        Construction {
            cfg,
            roster,
            tree,
            stage: 0,
            nodes: BTreeMap::new(),
            used: BTreeSet::new(),
            b: BTreeMap::new(),
            rt_v,
            rt_x,
            rt_y,
            rr_flip,
            mirrors,
            pending_assign: Vec::new(),
            restraints: BTreeMap::new(),
            pending_sharp: BTreeMap::new(),
            sharp_scheduled: BTreeMap::new(),
            events: Vec::new(),
            pick_seq: 0,
            committed_reg: BTreeSet::new(),
            ceiling: 0,
        }
    }

    pub fn run(mut self) -> Trace {
        let horizon = self.cfg.horizon;
        for s in 1..=horizon {
            self.run_stage(s);
        }
        let b: Vec<u64> = self.b.keys().copied().collect();
        self.events.push(Event::Final { b });
        Trace {
            header: TraceHeader {
                version: TRACE_VERSION,
                config: self.cfg.clone(),
                roster: self.roster.clone(),
            },
            events: self.events,
        }
    }

    fn run_stage(&mut self, s: u32) {
        self.stage = s;
        self.events.push(Event::Stage { s });
        self.apply_tracking(s);
        self.release_due_sharp(s);
        let delta = self.build_delta(s);
        self.events.push(Event::Delta {
            s,
            path: delta.render(),
        });
        self.reset_right_of(&delta, s);
        self.sweep_committed(&delta, s);
        for t in 0..=delta.len() {
            let p = delta.prefix(t);
            self.act(&p, s);
            self.sweep_committed(&delta, s);
        }
    }

    // ----- reactive adversary plumbing -------------------------------------

    fn apply_tracking(&mut self, s: u32) {
        let due: Vec<(u64, u32)> = self
            .pending_assign
            .iter()
            .filter(|(_, bs)| *bs < s)
            .copied()
            .collect();
        self.pending_assign.retain(|(_, bs)| *bs >= s);
        for (x, _) in due {
            for i in 0..self.roster.pair.len() {
                let Some(rule) = self.roster.pair[i].tracking.clone() else {
                    continue;
                };
                if self.rt_x[i].entry_stage(x).is_some() || self.rt_y[i].entry_stage(x).is_some() {
                    continue;
                }
                let to_x = match rule {
                    TrackingRule::AllToX => true,
                    TrackingRule::RoundRobin => {
                        let f = self.rr_flip[i];
                        self.rr_flip[i] = !f;
                        !f
                    }
                    TrackingRule::Threshold { threshold } => x < threshold,
                };
                let set = if to_x {
                    self.rt_x[i].insert(x, s);
                    set_ids::x_side(i)
                } else {
                    self.rt_y[i].insert(x, s);
                    set_ids::y_side(i)
                };
                self.events.push(Event::Enum {
                    s,
                    set,
                    x,
                    reason: Some("tracked".into()),
                    src: None,
                });
            }
        }
    }

    fn mirror_feed(&mut self, x: u64, q: &Path, s: u32) {
        for (vi, targets) in self.mirrors.clone() {
            if targets.matches(q).unwrap_or(false) && self.rt_v[vi].insert(x, s) {
                self.events.push(Event::Enum {
                    s,
                    set: set_ids::v(vi),
                    x,
                    reason: Some("mirror".into()),
                    src: Some(q.render()),
                });
            }
        }
    }

    // ----- element flow -----------------------------------------------------

    fn touch(&mut self, x: u64) {
        self.ceiling = self.ceiling.max(x);
    }

    fn restrained(&self, x: u64) -> bool {
        self.restraints.get(&x).is_some_and(|s| !s.is_empty())
    }

    fn restrain(&mut self, p: &Path, x: u64, s: u32) {
        if self.restraints.entry(x).or_default().insert(p.clone()) {
            self.events.push(Event::Restrain {
                s,
                path: p.render(),
                x,
            });
        }
    }

    fn unrestrain(&mut self, p: &Path, x: u64, s: u32) {
        if let Some(set) = self.restraints.get_mut(&x) {
            if set.remove(p) {
                self.events.push(Event::Unrestrain {
                    s,
                    path: p.render(),
                    x,
                });
            }
        }
    }

    fn b_insert(&mut self, x: u64, s: u32, reason: &str) {
        if self.b.contains_key(&x) {
            return;
        }
        assert!(
            !self.restrained(x),
            "engine bug: restrained element {x} offered to B at stage {s}"
        );
        self.b.insert(x, s);
        self.used.insert(x);
        self.touch(x);
        self.pending_assign.push((x, s));
        self.events.push(Event::Enum {
            s,
            set: set_ids::B.into(),
            x,
            reason: Some(reason.into()),
            src: None,
        });
    }

    fn b_contains(&self, x: u64) -> bool {
        self.b.contains_key(&x)
    }

    /// Nearest ancestor Q reached via its own c edge; `None` means B.
    fn forward_target(&self, q: &Path) -> Option<Path> {
        for k in (0..q.len()).rev() {
            let anc = q.prefix(k);
            if q.0[k] == Outcome::C
                && matches!(self.tree.assign(&anc).req, Requirement::Q { .. })
            {
                return Some(anc);
            }
        }
        None
    }

    fn pipe_insert(&mut self, q: &Path, x: u64, s: u32, src: &Path) {
        let st = self.nodes.entry(q.clone()).or_default();
        if st.pipe.contains_key(&x) || st.m.contains_key(&x) {
            return;
        }
        st.pipe.insert(x, s);
        st.dirty = true;
        self.touch(x);
        self.events.push(Event::Enum {
            s,
            set: set_ids::collector(q),
            x,
            reason: None,
            src: Some(src.render()),
        });
    }

    /// Emit an element upward from `from`, landing either in an ancestor
    /// collector or in B.
    fn emit_up(&mut self, from: &Path, x: u64, s: u32, reason: &str) {
        match self.forward_target(from) {
            Some(q) => self.pipe_insert(&q, x, s, from),
            None => self.b_insert(x, s, reason),
        }
    }

    // ----- pools ------------------------------------------------------------

    fn pool_of(&self, p: &Path) -> PoolView {
        let mut removed = BTreeSet::new();
        let mut cur = p.clone();
        loop {
            let Some(parent) = cur.parent() else {
                return PoolView {
                    source: PoolSource::Omega,
                    removed,
                };
            };
            let edge = *cur.0.last().unwrap();
            let pa = self.tree.assign(&parent);
            match pa.req {
                Requirement::Q { .. } => {
                    let source = match edge {
                        Outcome::Inf => PoolSource::Pinf(parent),
                        _ => PoolSource::R(parent),
                    };
                    return PoolView { source, removed };
                }
                Requirement::D { .. } | Requirement::SChild { .. } => {
                    if let Some(w) = self.nodes.get(&parent).and_then(|n| n.witness) {
                        removed.insert(w.x);
                    }
                }
                Requirement::SParent { .. } => {}
            }
            cur = parent;
        }
    }

    fn pool_contains(&self, pool: &PoolView, x: u64) -> bool {
        if pool.removed.contains(&x) {
            return false;
        }
        match &pool.source {
            PoolSource::Omega => true,
            PoolSource::R(q) => self.nodes.get(q).is_some_and(|n| n.r.contains(&x)),
            PoolSource::Pinf(q) => self.nodes.get(q).is_some_and(|n| n.p_inf.contains_key(&x)),
        }
    }

    /// Least pool element passing `ok`, scanning in value order.
    fn pool_least(&self, pool: &PoolView, ok: impl Fn(u64) -> bool) -> Option<u64> {
        match &pool.source {
            PoolSource::Omega => {
                (0..=self.ceiling + 1).find(|x| !pool.removed.contains(x) && ok(*x))
            }
            PoolSource::R(q) => self
                .nodes
                .get(q)
                .into_iter()
                .flat_map(|n| n.r.iter().copied())
                .find(|x| !pool.removed.contains(x) && ok(*x)),
            PoolSource::Pinf(q) => self
                .nodes
                .get(q)
                .into_iter()
                .flat_map(|n| n.p_inf.keys().copied())
                .find(|x| !pool.removed.contains(x) && ok(*x)),
        }
    }

    // ----- committed-strategy emissions --------------------------------------

    fn sweep_authority(&self, eta: &Path, delta: &Path) -> bool {
        eta.is_prefix_of(delta)
            || left_of(eta, delta)
            || (0..eta.len()).any(|k| eta.0[k] == Outcome::Inf && eta.prefix(k).is_prefix_of(delta))
    }

    fn sweep_committed(&mut self, delta: &Path, s: u32) {
        let etas: Vec<Path> = self
            .committed_reg
            .iter()
            .filter(|p| self.sweep_authority(p, delta))
            .cloned()
            .collect();
        for eta in etas {
            self.sharp_sweep(&eta, s);
        }
    }

    fn sharp_sweep(&mut self, eta: &Path, s: u32) {
        let Some(Requirement::SChild { i, v }) = self.nodes.get(eta).and_then(|n| n.req) else {
            return;
        };
        let entries: Vec<u64> = match self.rt_v.get(v) {
            Some(set) => set.iter_at(s).collect(),
            None => return,
        };
        for x in entries {
            let done = self
                .nodes
                .get(eta)
                .is_some_and(|n| n.sharp_done.contains(&x));
            if done {
                continue;
            }
            self.sharp_emit(eta, i, x, s);
        }
    }

    /// Committed emission of a test-set entrant; counts as a pull for any
    /// node currently waiting on the element.
    fn sharp_emit(&mut self, eta: &Path, pair: usize, x: u64, s: u32) -> bool {
        if self.b_contains(x) {
            self.nodes.get_mut(eta).unwrap().sharp_done.insert(x);
            return false;
        }
        if self.restrained(x) {
            return false; // retried on a later sweep
        }
        if matches!(self.cfg.regime, Regime::General { .. }) {
            if self.sharp_scheduled.contains_key(&x) {
                return false;
            }
            let due = self.compute_f(pair, x, s);
            self.nodes.get_mut(eta).unwrap().sharp_done.insert(x);
            if due > s {
                self.pending_sharp
                    .entry(due)
                    .or_default()
                    .push((x, eta.clone()));
                self.sharp_scheduled.insert(x, eta.clone());
                return true;
            }
            self.do_sharp_entry(&eta.clone(), x, s);
            return true;
        }
        self.nodes.get_mut(eta).unwrap().sharp_done.insert(x);
        self.do_sharp_entry(&eta.clone(), x, s);
        true
    }

    fn do_sharp_entry(&mut self, eta: &Path, x: u64, s: u32) {
        // Which nodes were waiting on x?
        let waiters: Vec<Path> = self
            .nodes
            .iter()
            .filter(|(_, n)| {
                n.m.contains_key(&x) && !n.resolved.contains(&x) && !self.b.contains_key(&x)
            })
            .map(|(p, _)| p.clone())
            .collect();
        self.b_insert(x, s, "sharp");
        for q in waiters {
            self.events.push(Event::Pull {
                s,
                puller: eta.render(),
                q: q.render(),
                x,
            });
            self.note_resolution_fate(&q, x, s);
        }
    }

    /// Record whether a waiter left the waiting set early (at or before the
    /// bound h(x, t)+1) or late, steering the parent Q's displaced outcome.
    fn note_resolution_fate(&mut self, q: &Path, x: u64, s: u32) {
        let Requirement::Q { h } = self.tree.assign(q).req else {
            return;
        };
        let phim = self.nodes.get(q).and_then(|n| n.m.get(&x).copied());
        let early = match phim.and_then(|t| self.roster.h_eval(h, x, t as u64, s)) {
            Some(hv) => (s as u64) <= hv + 1,
            None => true,
        };
        if let Some(st) = self.nodes.get_mut(q) {
            st.last_early = early;
            st.dirty = true;
        }
    }

    fn release_due_sharp(&mut self, s: u32) {
        let due: Vec<u32> = self
            .pending_sharp
            .keys()
            .copied()
            .filter(|d| *d <= s)
            .collect();
        for d in due {
            let items = self.pending_sharp.remove(&d).unwrap_or_default();
            for (x, eta) in items {
                self.sharp_scheduled.remove(&x);
                if self.b_contains(x) {
                    continue;
                }
                let still_committed = self.nodes.get(&eta).is_some_and(|n| n.committed);
                if !still_committed {
                    continue;
                }
                if self.restrained(x) {
                    // Try again next stage.
                    self.pending_sharp
                        .entry(s + 1)
                        .or_default()
                        .push((x, eta.clone()));
                    self.sharp_scheduled.insert(x, eta);
                    continue;
                }
                self.do_sharp_entry(&eta, x, s);
            }
        }
    }

    // ----- delay arithmetic ---------------------------------------------------

    /// First stage strictly beyond every converged delay bound on x up to
    /// stage s, and beyond the guards of higher-priority pairs.
    pub fn compute_f(&self, pair: usize, x: u64, s: u32) -> u32 {
        let mut bound: u64 = 0;
        for hf in &self.roster.h {
            if let Some(m) = hf.max_over_second_arg(x, s, s) {
                bound = bound.max(m);
            }
        }
        for l in 0..pair {
            bound = bound.max(self.compute_g(l, x, s));
        }
        u32::try_from(bound + 1).unwrap_or(u32::MAX)
    }

    /// Guard value for pair i: the stage by which a B-member must have been
    /// assigned a side, pushed past the delay bounds in the general regime.
    pub fn compute_g(&self, pair: usize, x: u64, s: u32) -> u64 {
        let in_b = self.b.get(&x).is_some_and(|t| *t <= s);
        let entry = self
            .rt_x
            .get(pair)
            .and_then(|r| r.entry_stage(x))
            .into_iter()
            .chain(self.rt_y.get(pair).and_then(|r| r.entry_stage(x)))
            .min()
            .unwrap_or(0) as u64;
        match self.cfg.regime {
            Regime::General { .. } => {
                let f = self.compute_f(pair, x, s) as u64;
                f.max(if in_b { entry } else { 0 }) + 1
            }
            _ => {
                if in_b {
                    entry
                } else {
                    0
                }
            }
        }
    }

    // ----- stage-path construction ---------------------------------------------

    fn ensure_node(&mut self, p: &Path) {
        let req = self.tree.assign(p).req;
        let st = self.nodes.entry(p.clone()).or_default();
        st.req = Some(req);
    }

    fn build_delta(&mut self, s: u32) -> Path {
        let mut p = Path::root();
        self.ensure_node(&p);
        for _ in 0..s as usize {
            let a = self.tree.assign(&p);
            let o = match a.req {
                Requirement::Q { h } => self.eval_q(&p, h, &a.successors, s),
                Requirement::D { i } => self.eval_d(&p, i, s),
                Requirement::SParent { i } => self.eval_sparent(i, &a.successors, s),
                Requirement::SChild { i, v } => self.eval_schild(&p, i, v, s),
            };
            self.events.push(Event::Outcome {
                s,
                path: p.render(),
                o: o.token().into(),
            });
            let child = p.child(o);
            if !self.nodes.contains_key(&child) {
                let cg = self.tree.assign(&child).g.clone();
                if cg != a.g {
                    self.events.push(Event::Switch {
                        s,
                        path: child.render(),
                        before: render_g(&a.g),
                        after: render_g(&cg),
                    });
                }
            }
            self.ensure_node(&child);
            p = child;
        }
        p
    }

    fn eval_q(&mut self, p: &Path, h: usize, successors: &[Outcome], s: u32) -> Outcome {
        let can_c = successors.contains(&Outcome::C);
        let st = self.nodes.get(p).cloned().unwrap_or_default();
        let waiters: Vec<(u64, u32)> = st
            .m
            .iter()
            .filter(|(x, _)| {
                !st.resolved.contains(x)
                    && !self.b.contains_key(x)
                    && !self.sharp_scheduled.contains_key(x)
            })
            .map(|(x, t)| (*x, *t))
            .collect();
        let had_waiters = !waiters.is_empty();
        // Committed strategies left of this node or below its inf outcome may
        // grab waiters now.
        let mut pulled_now = 0usize;
        let inf_child = p.child(Outcome::Inf);
        let etas: Vec<(Path, usize, usize)> = self
            .committed_reg
            .iter()
            .filter(|ep| left_of(ep, p) || inf_child.is_prefix_of(ep))
            .filter_map(|ep| match self.nodes.get(ep).and_then(|n| n.req) {
                Some(Requirement::SChild { i, v }) => Some((ep.clone(), i, v)),
                _ => None,
            })
            .collect();
        for (x, _) in &waiters {
            if self.b_contains(*x) || self.sharp_scheduled.contains_key(x) {
                continue;
            }
            for (eta, i, v) in &etas {
                let in_v = self.rt_v.get(*v).is_some_and(|r| r.contains_at(*x, s));
                let done = self
                    .nodes
                    .get(eta)
                    .is_some_and(|n| n.sharp_done.contains(x));
                if in_v && !done && self.sharp_emit(eta, *i, *x, s) {
                    pulled_now += 1;
                    break;
                }
            }
        }
        let remaining: Vec<(u64, u32)> = waiters
            .into_iter()
            .filter(|(x, _)| !self.b.contains_key(x) && !self.sharp_scheduled.contains_key(x))
            .collect();
        if remaining.is_empty() {
            if had_waiters && pulled_now > 0 && can_c {
                return Outcome::C;
            }
            if st.had_entrant && st.last_early && can_c {
                return Outcome::C;
            }
            return Outcome::H;
        }
        let overdue = remaining.iter().any(|(x, t)| {
            self.roster
                .h_eval(h, *x, *t as u64, s)
                .is_some_and(|hv| (s as u64) > hv + 1)
        });
        if overdue {
            Outcome::Inf
        } else if pulled_now > 0 && can_c {
            Outcome::C
        } else {
            Outcome::H
        }
    }

    fn eval_d(&mut self, p: &Path, i: usize, s: u32) -> Outcome {
        let w = self.nodes.get(p).and_then(|n| n.witness);
        match w {
            Some(w) if self.roster.delta_eval(i, w.x, s) == Some(0) => Outcome::A,
            _ => Outcome::D,
        }
    }

    fn eval_sparent(&mut self, i: usize, successors: &[Outcome], s: u32) -> Outcome {
        if successors == [Outcome::Blank] {
            return Outcome::Blank;
        }
        if self.looks_like_split(i, s) {
            Outcome::Split
        } else {
            Outcome::Fin
        }
    }

    /// Do the pair's sides currently look like a split of B: disjoint, and
    /// jointly covering everything enumerated into B before this stage (one
    /// stage of slack for the tracking lag).
    fn looks_like_split(&self, i: usize, s: u32) -> bool {
        let empty = RtSet::default();
        let xs = self.rt_x.get(i).unwrap_or(&empty);
        let ys = self.rt_y.get(i).unwrap_or(&empty);
        for (e, t) in xs.iter_all() {
            if t <= s && ys.contains_at(e, s) {
                return false;
            }
        }
        self.b
            .iter()
            .filter(|(_, t)| **t < s)
            .all(|(x, _)| xs.contains_at(*x, s) || ys.contains_at(*x, s))
    }

    fn eval_schild(&mut self, p: &Path, i: usize, v: usize, s: u32) -> Outcome {
        self.s_child_decide(p, i, v, s)
    }

    /// Witness search for an S-child; commits to immediate pass-through when
    /// every option fails. Commitment is sticky until the node is reset.
    fn s_child_decide(&mut self, p: &Path, i: usize, v: usize, s: u32) -> Outcome {
        {
            let st = self.nodes.get(p).cloned().unwrap_or_default();
            if st.witness.is_some() {
                return Outcome::K;
            }
            if st.committed {
                return Outcome::S;
            }
        }
        if let Some(hit) = self.s_try_steps(p, i, v, s) {
            self.s_adopt(p, hit, s);
            return Outcome::K;
        }
        // Commit: elements already in the test set are backlog, not future
        // entrants, and are not passed through.
        let backlog: BTreeSet<u64> = self
            .rt_v
            .get(v)
            .map(|r| r.iter_at(s).collect())
            .unwrap_or_default();
        let st = self.nodes.entry(p.clone()).or_default();
        st.committed = true;
        st.sharp_done = backlog;
        st.dirty = true;
        self.committed_reg.insert(p.clone());
        self.events.push(Event::Commit {
            s,
            path: p.render(),
        });
        Outcome::S
    }

    fn s_try_steps(&self, p: &Path, i: usize, v: usize, s: u32) -> Option<StepHit> {
        let empty = RtSet::default();
        let vset = self.rt_v.get(v).unwrap_or(&empty);
        let g = &self.tree.assign(p).g;
        let side = g.get(i).copied().unwrap_or(Side::X);
        let (_own, other) = match side {
            Side::X => (
                self.rt_x.get(i).unwrap_or(&empty),
                self.rt_y.get(i).unwrap_or(&empty),
            ),
            Side::Y => (
                self.rt_y.get(i).unwrap_or(&empty),
                self.rt_x.get(i).unwrap_or(&empty),
            ),
        };
        // Step 1: an element of the test set already on the other side.
        if let Some(x) = vset.iter_at(s).find(|x| other.contains_at(*x, s)) {
            return Some(StepHit::Settled { x });
        }
        // Step 2: share another S-witness that landed in the test set.
        let mut cand: Option<(u64, u64)> = None; // (seq, x)
        for (gp, gn) in &self.nodes {
            if gp == p {
                continue;
            }
            if !matches!(gn.req, Some(Requirement::SChild { .. })) {
                continue;
            }
            if let Some(w) = gn.witness {
                if vset.contains_at(w.x, s) && cand.is_none_or(|(sq, _)| w.seq < sq) {
                    cand = Some((w.seq, w.x));
                }
            }
        }
        if let Some((_, x)) = cand {
            return Some(StepHit::Shared { x });
        }
        // Step 3: adopt a diagonalization witness that landed in the test set.
        let mut a_cand: Option<(u64, u64, Path)> = None;
        let mut b_cand: Option<(u64, u64, Path)> = None;
        for (gp, gn) in &self.nodes {
            if !matches!(gn.req, Some(Requirement::D { .. })) {
                continue;
            }
            let Some(w) = gn.witness else { continue };
            if !vset.contains_at(w.x, s) {
                continue;
            }
            let gp_higher = higher_priority(gp, p);
            let restrains = self
                .restraints
                .get(&w.x)
                .is_some_and(|set| set.contains(gp));
            if gp_higher && restrains {
                if a_cand.as_ref().is_none_or(|(sq, _, _)| w.seq < *sq) {
                    a_cand = Some((w.seq, w.x, gp.clone()));
                }
            } else if !gp_higher && !self.b.contains_key(&w.x) {
                let blocked = self.stations_of(w.x).iter().any(|d| higher_priority(d, p));
                if !blocked && b_cand.as_ref().is_none_or(|(sq, _, _)| w.seq < *sq) {
                    b_cand = Some((w.seq, w.x, gp.clone()));
                }
            }
        }
        if let Some((_, x, donor)) = a_cand {
            return Some(StepHit::Linked { x, donor });
        }
        if let Some((_, x, donor)) = b_cand {
            return Some(StepHit::Seized { x, donor });
        }
        // Step 4: a fresh pool element inside the test set.
        let pool = self.pool_of(p);
        let fresh = vset
            .iter_at(s)
            .find(|x| !self.used.contains(x) && self.pool_contains(&pool, *x));
        fresh.map(|x| StepHit::Fresh { x })
    }

    fn stations_of(&self, x: u64) -> Vec<Path> {
        self.nodes
            .iter()
            .filter(|(_, n)| n.pipe.contains_key(&x) || n.m.contains_key(&x))
            .map(|(p, _)| p.clone())
            .collect()
    }

    fn s_adopt(&mut self, p: &Path, hit: StepHit, s: u32) {
        let seq = self.pick_seq;
        self.pick_seq += 1;
        let (x, restrain, donor, seize) = match hit {
            StepHit::Settled { x } => (x, false, None, None),
            StepHit::Shared { x } => (x, true, None, None),
            StepHit::Linked { x, donor } => (x, true, Some(donor), None),
            StepHit::Seized { x, donor } => (x, true, None, Some(donor)),
            StepHit::Fresh { x } => (x, true, None, None),
        };
        self.used.insert(x);
        self.touch(x);
        {
            let st = self.nodes.entry(p.clone()).or_default();
            st.witness = Some(Witness { x, seq });
            st.donor = donor.clone();
            st.dirty = true;
        }
        self.events.push(Event::Pick {
            s,
            path: p.render(),
            x,
        });
        if restrain {
            self.restrain(p, x, s);
        }
        if let Some(d) = seize {
            self.reset_node(&d, s);
        }
    }

    // ----- resets ----------------------------------------------------------------

    fn reset_right_of(&mut self, delta: &Path, s: u32) {
        let targets: Vec<Path> = self
            .nodes
            .iter()
            .filter(|(p, n)| left_of(delta, p) && n.dirty)
            .map(|(p, _)| p.clone())
            .collect();
        for p in targets {
            self.reset_node(&p, s);
        }
    }

    fn reset_node(&mut self, p: &Path, s: u32) {
        let Some(st) = self.nodes.get(p) else { return };
        if !st.dirty {
            return;
        }
        let witness = st.witness;
        let reset_count = st.reset_count;
        let req = st.req;
        // Release everything this node restrains.
        let held: Vec<u64> = self
            .restraints
            .iter()
            .filter(|(_, set)| set.contains(p))
            .map(|(x, _)| *x)
            .collect();
        for x in held {
            self.unrestrain(p, x, s);
        }
        let fresh = NodeState {
            req,
            reset_count: reset_count + 1,
            ..NodeState::default()
        };
        self.nodes.insert(p.clone(), fresh);
        self.committed_reg.remove(p);
        self.events.push(Event::Reset {
            s,
            path: p.render(),
        });
        // Cancel delayed emissions owned by this node.
        for items in self.pending_sharp.values_mut() {
            items.retain(|(x, eta)| {
                if eta == p {
                    self.sharp_scheduled.remove(x);
                    false
                } else {
                    true
                }
            });
        }
        // Witness adopters linked to this node lose their witness too.
        if let Some(w) = witness {
            let adopters: Vec<Path> = self
                .nodes
                .iter()
                .filter(|(_, n)| n.donor.as_ref() == Some(p))
                .map(|(ap, _)| ap.clone())
                .collect();
            for ap in adopters {
                self.unrestrain(&ap, w.x, s);
                if let Some(ast) = self.nodes.get_mut(&ap) {
                    ast.witness = None;
                    ast.donor = None;
                }
            }
        }
    }

    // ----- substage actions ----------------------------------------------------

    fn act(&mut self, p: &Path, s: u32) {
        let req = self.tree.assign(p).req;
        self.ensure_node(p);
        match req {
            Requirement::Q { h } => self.q_act(p, h, s),
            Requirement::D { i } => self.d_act(p, i, s),
            Requirement::SParent { .. } => {}
            Requirement::SChild { i, v } => {
                // A terminal node may act without having been evaluated.
                let st = self.nodes.get(p).cloned().unwrap_or_default();
                if st.witness.is_none() && !st.committed {
                    self.s_child_decide(p, i, v, s);
                }
            }
        }
    }

    fn d_act(&mut self, p: &Path, i: usize, s: u32) {
        let st = self.nodes.get(p).cloned().unwrap_or_default();
        if st.witness.is_none() {
            let pool = self.pool_of(p);
            let x = self.pool_least(&pool, |x| !self.used.contains(&x));
            match x {
                Some(x) => {
                    let seq = self.pick_seq;
                    self.pick_seq += 1;
                    self.used.insert(x);
                    self.touch(x);
                    let st = self.nodes.entry(p.clone()).or_default();
                    st.witness = Some(Witness { x, seq });
                    st.dirty = true;
                    self.events.push(Event::Pick {
                        s,
                        path: p.render(),
                        x,
                    });
                    self.restrain(p, x, s);
                }
                None => {
                    self.events.push(Event::Halt {
                        s,
                        path: p.render(),
                        why: "pool-exhausted".into(),
                    });
                }
            }
        }
        let st = self.nodes.get(p).cloned().unwrap_or_default();
        if let Some(w) = st.witness {
            if !st.emitted && self.roster.delta_eval(i, w.x, s) == Some(0) {
                // Blocked while someone else also restrains the witness.
                let others = self
                    .restraints
                    .get(&w.x)
                    .map(|set| set.iter().any(|q| q != p))
                    .unwrap_or(false);
                if !others && !self.b_contains(w.x) {
                    self.unrestrain(p, w.x, s);
                    self.nodes.get_mut(p).unwrap().emitted = true;
                    // A diagonalization witness always enters the collector of
                    // its parent Q-node.
                    match p.parent() {
                        Some(parent)
                            if matches!(
                                self.tree.assign(&parent).req,
                                Requirement::Q { .. }
                            ) =>
                        {
                            self.pipe_insert(&parent, w.x, s, p)
                        }
                        _ => self.emit_up(p, w.x, s, "witness"),
                    }
                }
            }
        }
    }

    fn q_act(&mut self, p: &Path, h: usize, s: u32) {
        // Step 1: stage a fresh candidate.
        let pool = self.pool_of(p);
        let st_snapshot = self.nodes.get(p).cloned().unwrap_or_default();
        let pick = self.pool_least(&pool, |x| {
            !self.used.contains(&x)
                && !st_snapshot.r_all.contains(&x)
                && !st_snapshot.p_inf.contains_key(&x)
        });
        match pick {
            Some(x) => {
                self.touch(x);
                let st = self.nodes.get_mut(p).unwrap();
                st.r.insert(x);
                st.r_all.insert(x);
                st.dirty = true;
                self.events.push(Event::Enum {
                    s,
                    set: set_ids::r(p),
                    x,
                    reason: Some("picked".into()),
                    src: None,
                });
            }
            None => {
                if !matches!(pool.source, PoolSource::Omega) {
                    self.events.push(Event::Halt {
                        s,
                        path: p.render(),
                        why: "pool-exhausted".into(),
                    });
                }
            }
        }
        // Step 2: admit collector arrivals into the waiting set.
        let arrivals: Vec<u64> = {
            let st = self.nodes.get(p).unwrap();
            st.pipe
                .keys()
                .filter(|x| !st.pipe_moved.contains(x))
                .copied()
                .collect()
        };
        for x in arrivals {
            let st = self.nodes.get_mut(p).unwrap();
            st.pipe_moved.insert(x);
            if st.m.contains_key(&x) {
                continue;
            }
            st.m.insert(x, s);
            st.had_entrant = true;
            st.dirty = true;
            self.used.insert(x);
            self.touch(x);
            self.events.push(Event::Enum {
                s,
                set: set_ids::m(p),
                x,
                reason: None,
                src: None,
            });
            self.mirror_feed(x, p, s);
        }
        // Step 3: waiters that outlived their bound climb on; the first such
        // observation retires the staging set and flushes the waiting set.
        let waiting: Vec<(u64, u32)> = {
            let st = self.nodes.get(p).unwrap();
            st.m
                .iter()
                .filter(|(x, _)| !st.resolved.contains(x) && !self.b.contains_key(x))
                .map(|(x, t)| (*x, *t))
                .collect()
        };
        let mut survivor = false;
        for (x, t) in &waiting {
            let over = self
                .roster
                .h_eval(h, *x, *t as u64, s)
                .is_some_and(|hv| (s as u64) > hv + 1);
            if !over {
                continue;
            }
            survivor = true;
            if !self.restrained(*x) {
                {
                    let st = self.nodes.get_mut(p).unwrap();
                    st.resolved.insert(*x);
                    st.last_early = false;
                }
                self.emit_up(p, *x, s, "slow");
            }
        }
        if survivor {
            // Reserve a fresh element for the decided region.
            let pool = self.pool_of(p);
            let st_snapshot = self.nodes.get(p).cloned().unwrap_or_default();
            let y = self.pool_least(&pool, |x| {
                !self.used.contains(&x)
                    && !st_snapshot.r_all.contains(&x)
                    && !st_snapshot.p_inf.contains_key(&x)
            });
            match y {
                Some(y) => {
                    self.touch(y);
                    let st = self.nodes.get_mut(p).unwrap();
                    st.p_inf.insert(y, s);
                    let bound = st.p_inf_bound.map_or(y, |b| b.max(y));
                    st.p_inf_bound = Some(bound);
                    self.events.push(Event::Enum {
                        s,
                        set: set_ids::pinf(p),
                        x: y,
                        reason: None,
                        src: None,
                    });
                    self.events.push(Event::PinfExtend {
                        s,
                        path: p.render(),
                        bound,
                    });
                }
                None => {
                    self.events.push(Event::Halt {
                        s,
                        path: p.render(),
                        why: "reserve-exhausted".into(),
                    });
                }
            }
            let epoch = {
                let st = self.nodes.get_mut(p).unwrap();
                st.r.clear();
                st.r_epoch += 1;
                st.r_epoch
            };
            self.events.push(Event::RReset {
                s,
                path: p.render(),
                epoch,
            });
            // Flush: the waiting set no longer belongs to the staging set.
            let flush: Vec<u64> = {
                let st = self.nodes.get(p).unwrap();
                st.m
                    .keys()
                    .filter(|x| !self.b.contains_key(x) && !self.restrained(**x))
                    .copied()
                    .collect()
            };
            for x in flush {
                {
                    let st = self.nodes.get_mut(p).unwrap();
                    st.resolved.insert(x);
                    st.last_early = false;
                }
                self.b_insert(x, s, "flush");
            }
        }
        // Step 4: everything small, untouched and unclaimed goes into B.
        // "Claimed" means staged or reserved by any live node, not just this
        // one; flooding another strategy's stock would corrupt its equation.
        if let Some(x) = pick {
            for y in 0..x {
                if !self.used.contains(&y) && !self.restrained(y) && !self.claimed(y) {
                    self.b_insert(y, s, "flood");
                }
            }
        }
    }

    fn claimed(&self, y: u64) -> bool {
        self.nodes
            .values()
            .any(|st| st.r.contains(&y) || st.p_inf.contains_key(&y))
    }

    // ----- queries used by callers ------------------------------------------------

    pub fn b_snapshot(&self) -> Vec<(u64, u32)> {
        self.b.iter().map(|(x, t)| (*x, *t)).collect()
    }
}

enum StepHit {
    /// Step 1: element of the test set already on the other side.
    Settled { x: u64 },
    /// Step 2: shared with another S-strategy.
    Shared { x: u64 },
    /// Step 3a: linked to a higher-priority diagonalization witness.
    Linked { x: u64, donor: Path },
    /// Step 3b: seized from a weaker diagonalization strategy.
    Seized { x: u64, donor: Path },
    /// Step 4: fresh pool element.
    Fresh { x: u64 },
}
