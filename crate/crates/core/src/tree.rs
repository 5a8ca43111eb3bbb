//! Outcome alphabet, paths, and the requirement-assignment recursion.
//!
//! The strategy tree is a lazily-memoized map from paths (finite outcome
//! strings) to node assignments. Everything here is a pure function of the
//! regime and roster arities, so the verifier can rebuild it independently
//! of a run.

use std::cell::RefCell;
use std::collections::HashMap;
use std::fmt;
use std::rc::Rc;

use serde::{Deserialize, Serialize};

use crate::error::ModelError;

/// Node outcomes, ordered left-to-right by priority:
/// `inf < c < h < split < fin < k < s < a < d`.
///
/// `blank` is the sole successor of a two-split pair node and never competes
/// with another outcome, so its position in the order is never consulted; it
/// sorts last only to keep `Ord` total.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Outcome {
    Inf,
    C,
    H,
    Split,
    Fin,
    K,
    S,
    A,
    D,
    Blank,
}

impl Outcome {
    pub fn token(self) -> &'static str {
        match self {
            Outcome::Inf => "inf",
            Outcome::C => "c",
            Outcome::H => "h",
            Outcome::Split => "split",
            Outcome::Fin => "fin",
            Outcome::K => "k",
            Outcome::S => "s",
            Outcome::A => "a",
            Outcome::D => "d",
            Outcome::Blank => "blank",
        }
    }

    pub fn parse(tok: &str) -> Result<Self, ModelError> {
        Ok(match tok {
            "inf" => Outcome::Inf,
            "c" => Outcome::C,
            "h" => Outcome::H,
            "split" => Outcome::Split,
            "fin" => Outcome::Fin,
            "k" => Outcome::K,
            "s" => Outcome::S,
            "a" => Outcome::A,
            "d" => Outcome::D,
            "blank" => Outcome::Blank,
            other => return Err(ModelError::BadOutcomeToken(other.to_string())),
        })
    }
}

impl fmt::Display for Outcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.token())
    }
}

/// A node of the strategy tree, identified by the outcome string leading to it.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct Path(pub Vec<Outcome>);

impl Path {
    pub fn root() -> Self {
        Path(Vec::new())
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn child(&self, o: Outcome) -> Path {
        let mut v = self.0.clone();
        v.push(o);
        Path(v)
    }

    pub fn parent(&self) -> Option<Path> {
        if self.0.is_empty() {
            None
        } else {
            Some(Path(self.0[..self.0.len() - 1].to_vec()))
        }
    }

    pub fn prefix(&self, len: usize) -> Path {
        Path(self.0[..len].to_vec())
    }

    pub fn is_prefix_of(&self, other: &Path) -> bool {
        other.0.len() >= self.0.len() && other.0[..self.0.len()] == self.0[..]
    }

    /// Render as dot-joined outcome tokens; the root is the empty string.
    pub fn render(&self) -> String {
        self.0
            .iter()
            .map(|o| o.token())
            .collect::<Vec<_>>()
            .join(".")
    }

    pub fn parse(s: &str) -> Result<Path, ModelError> {
        if s.is_empty() {
            return Ok(Path::root());
        }
        let mut v = Vec::new();
        for tok in s.split('.') {
            v.push(Outcome::parse(tok)?);
        }
        Ok(Path(v))
    }
}

impl fmt::Display for Path {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.render())
    }
}

/// `a` lies strictly to the left of `b`: at the first coordinate where they
/// differ (both defined), `a` takes the smaller outcome. Prefixes are not
/// left of their extensions.
pub fn left_of(a: &Path, b: &Path) -> bool {
    for (x, y) in a.0.iter().zip(b.0.iter()) {
        if x != y {
            return x < y;
        }
    }
    false
}

/// `a` has higher priority than `b`: `a` is left of `b` or a proper prefix.
pub fn higher_priority(a: &Path, b: &Path) -> bool {
    (a.is_prefix_of(b) && a.len() < b.len()) || left_of(a, b)
}

/// Requirements a node can work on.
///
/// Indices beyond the roster are "virtual": the corresponding adversary
/// object is everywhere-divergent / empty, which keeps assignment total.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Requirement {
    /// Build M witnessing a speed-up against the j-th delay bound h.
    Q { h: usize },
    /// Diagonalize against the i-th candidate reduction.
    D { i: usize },
    /// Pair node for the i-th split candidate.
    SParent { i: usize },
    /// Nonspeedability strategy for side i against test set V_v.
    SChild { i: usize, v: usize },
}

impl fmt::Display for Requirement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Requirement::Q { h } => write!(f, "Q{}", h),
            Requirement::D { i } => write!(f, "D{}", i),
            Requirement::SParent { i } => write!(f, "S{}", i),
            Requirement::SChild { i, v } => write!(f, "S{}v{}", i, v),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind")]
pub enum Regime {
    OneSplit,
    TwoSplit,
    General { splits: usize },
}

impl Regime {
    pub fn token(&self) -> String {
        match self {
            Regime::OneSplit => "one-split".into(),
            Regime::TwoSplit => "two-split".into(),
            Regime::General { splits } => format!("general({})", splits),
        }
    }
}

/// Which side of split pair i a strategy currently works on.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Side {
    X,
    Y,
}

/// Switch rule for the side vector: flip the largest-index X to Y and reset
/// every higher index back to X. A vector with no X is left unchanged.
pub fn switch_g(g: &[Side]) -> Vec<Side> {
    let mut out = g.to_vec();
    if let Some(k) = out.iter().rposition(|s| *s == Side::X) {
        out[k] = Side::Y;
        for s in out.iter_mut().skip(k + 1) {
            *s = Side::X;
        }
    }
    out
}

pub fn render_g(g: &[Side]) -> String {
    g.iter()
        .enumerate()
        .map(|(i, s)| match s {
            Side::X => format!("X{}", i),
            Side::Y => format!("Y{}", i),
        })
        .collect::<Vec<_>>()
        .join(",")
}

pub fn parse_g(s: &str) -> Result<Vec<Side>, ModelError> {
    if s.is_empty() {
        return Ok(Vec::new());
    }
    let mut out = Vec::new();
    for (i, part) in s.split(',').enumerate() {
        let side = match part.chars().next() {
            Some('X') => Side::X,
            Some('Y') => Side::Y,
            _ => return Err(ModelError::BadSideVector(s.to_string())),
        };
        let idx: usize = part[1..]
            .parse()
            .map_err(|_| ModelError::BadSideVector(s.to_string()))?;
        if idx != i {
            return Err(ModelError::BadSideVector(s.to_string()));
        }
        out.push(side);
    }
    Ok(out)
}

/// Repetition-list update for a child node, from the parent's lists, the
/// parent's requirement, and the edge outcome taken.
pub fn update_lists(
    l1: &[Requirement],
    l2: &[Requirement],
    pred: Requirement,
    edge: Outcome,
) -> (Vec<Requirement>, Vec<Requirement>) {
    match pred {
        Requirement::Q { .. } if edge == Outcome::C => (Vec::new(), l1.to_vec()),
        Requirement::SParent { .. } | Requirement::SChild { .. } => {
            let mut n1 = l1.to_vec();
            n1.push(pred);
            let n2 = l2.iter().filter(|r| **r != pred).cloned().collect();
            (n1, n2)
        }
        _ => (l1.to_vec(), l2.to_vec()),
    }
}

/// Everything the engine and verifier need to know about a tree node,
/// computed by recursion on the path.
#[derive(Clone, Debug)]
pub struct NodeAssignment {
    pub req: Requirement,
    pub successors: Vec<Outcome>,
    /// Side vector: which half of each split pair strategies below work on.
    pub g: Vec<Side>,
    pub l1: Vec<Requirement>,
    pub l2: Vec<Requirement>,
    // Recursion bookkeeping.
    next_d: usize,
    next_q: usize,
    /// Q indices with a node on this path.
    q_on_path: Vec<usize>,
    /// Q indices some node of which was extended via `inf` on this path.
    q_satisfied: Vec<usize>,
    /// Pair indices whose parent node lies on this path.
    parents_on_path: Vec<usize>,
    /// Pair indices whose parent took the `fin` outcome on this path.
    fin_parents: Vec<usize>,
    /// S requirements already assigned on this path (pair index, child index).
    s_assigned: Vec<(usize, Option<usize>)>,
    /// Whether a c edge occurs anywhere on this path.
    below_c: bool,
}

/// Lazily-memoized tree: assignment is a pure function of the path.
pub struct TreeBuilder {
    pub regime: Regime,
    /// Number of scripted test sets in the roster (child strategies per pair).
    pub v_count: usize,
    memo: RefCell<HashMap<Vec<Outcome>, Rc<NodeAssignment>>>,
}

impl TreeBuilder {
    pub fn new(regime: Regime, v_count: usize) -> Self {
        TreeBuilder {
            regime,
            v_count,
            memo: RefCell::new(HashMap::new()),
        }
    }

    fn pair_cap(&self) -> usize {
        match self.regime {
            Regime::OneSplit => 1,
            Regime::TwoSplit => 2,
            Regime::General { splits } => splits.max(2),
        }
    }

    fn root_assignment(&self) -> NodeAssignment {
        let g = match self.regime {
            Regime::OneSplit => vec![Side::X],
            _ => vec![Side::X, Side::X],
        };
        NodeAssignment {
            req: Requirement::Q { h: 0 },
            successors: vec![Outcome::Inf, Outcome::C, Outcome::H],
            g,
            l1: Vec::new(),
            l2: Vec::new(),
            next_d: 0,
            next_q: 1,
            q_on_path: vec![0],
            q_satisfied: Vec::new(),
            parents_on_path: Vec::new(),
            fin_parents: Vec::new(),
            s_assigned: Vec::new(),
            below_c: false,
        }
    }

    pub fn assign(&self, path: &Path) -> Rc<NodeAssignment> {
        if let Some(a) = self.memo.borrow().get(&path.0) {
            return Rc::clone(a);
        }
        let a = if path.is_empty() {
            Rc::new(self.root_assignment())
        } else {
            let parent = path.parent().expect("non-root");
            let edge = *path.0.last().unwrap();
            let pa = self.assign(&parent);
            Rc::new(self.child_assignment(&pa, edge))
        };
        self.memo
            .borrow_mut()
            .insert(path.0.clone(), Rc::clone(&a));
        a
    }

    fn child_assignment(&self, pa: &NodeAssignment, edge: Outcome) -> NodeAssignment {
        assert!(
            pa.successors.contains(&edge),
            "edge {} is not a successor of a {} node",
            edge,
            pa.req
        );
        let mut next = pa.clone();
        let (l1, l2) = update_lists(&pa.l1, &pa.l2, pa.req, edge);
        next.l1 = l1;
        next.l2 = l2;
        if edge == Outcome::C {
            next.below_c = true;
        }

        match pa.req {
            Requirement::Q { h } => {
                if edge == Outcome::Inf && !next.q_satisfied.contains(&h) {
                    next.q_satisfied.push(h);
                }
                if edge == Outcome::C && self.regime != Regime::OneSplit {
                    next.g = switch_g(&pa.g);
                }
            }
            Requirement::SParent { i } => {
                if edge == Outcome::Fin {
                    next.fin_parents.push(i);
                }
                if edge == Outcome::Split && i >= next.g.len() {
                    while next.g.len() <= i {
                        next.g.push(Side::X);
                    }
                }
            }
            _ => {}
        }

        let (req, successors) = self.pick_requirement(&mut next, pa.req, edge);
        next.req = req;
        next.successors = successors;
        match req {
            Requirement::Q { h } => {
                if !next.q_on_path.contains(&h) {
                    next.q_on_path.push(h);
                }
            }
            Requirement::SParent { i } => {
                next.parents_on_path.push(i);
                next.s_assigned.push((i, None));
            }
            Requirement::SChild { i, v } => {
                next.s_assigned.push((i, Some(v)));
            }
            Requirement::D { .. } => {}
        }
        next
    }

    fn q_successors(&self, below_c: bool) -> Vec<Outcome> {
        if self.regime == Regime::OneSplit && below_c {
            vec![Outcome::Inf, Outcome::H]
        } else {
            vec![Outcome::Inf, Outcome::C, Outcome::H]
        }
    }

    fn s_successors(&self, req: Requirement) -> Vec<Outcome> {
        match (req, self.regime) {
            (Requirement::SParent { .. }, Regime::TwoSplit) => vec![Outcome::Blank],
            (Requirement::SParent { .. }, _) => vec![Outcome::Split, Outcome::Fin],
            _ => vec![Outcome::K, Outcome::S],
        }
    }

    fn pick_requirement(
        &self,
        st: &mut NodeAssignment,
        pred: Requirement,
        edge: Outcome,
    ) -> (Requirement, Vec<Outcome>) {
        // A contested Q repeats itself directly below its own c outcome.
        if let Requirement::Q { h } = pred {
            if edge == Outcome::C {
                let below_c = true;
                return (Requirement::Q { h }, self.q_successors(below_c));
            }
        }

        if self.regime == Regime::OneSplit {
            return self.pick_one_split(st, pred, edge);
        }

        // Repetition list first: a displaced split strategy gets re-run.
        if !st.l2.is_empty() {
            let req = *highest_priority_s(&st.l2);
            st.l2.retain(|r| *r != req);
            return (req, self.s_successors(req));
        }

        match pred {
            Requirement::Q { .. } => {
                let i = st.next_d;
                st.next_d += 1;
                (Requirement::D { i }, vec![Outcome::A, Outcome::D])
            }
            Requirement::D { .. } => match self.next_s(st) {
                Some(req) => (req, self.s_successors(req)),
                None => self.next_q(st),
            },
            _ => self.next_q(st),
        }
    }

    fn pick_one_split(
        &self,
        st: &mut NodeAssignment,
        pred: Requirement,
        _edge: Outcome,
    ) -> (Requirement, Vec<Outcome>) {
        // One split: no pair nodes; below a contested region (c on the path)
        // the split strategies are not replayed, so Q and D alternate.
        let below_c = st_has_c(st);
        match pred {
            Requirement::Q { .. } => {
                let i = st.next_d;
                st.next_d += 1;
                (Requirement::D { i }, vec![Outcome::A, Outcome::D])
            }
            Requirement::D { .. } if !below_c => {
                let v = st
                    .s_assigned
                    .iter()
                    .filter(|(i, c)| *i == 0 && c.is_some())
                    .count();
                let req = Requirement::SChild { i: 0, v };
                (req, self.s_successors(req))
            }
            _ => self.next_q(st),
        }
    }

    fn next_q(&self, st: &mut NodeAssignment) -> (Requirement, Vec<Outcome>) {
        let h = st.next_q;
        st.next_q += 1;
        let below_c = self.regime == Regime::OneSplit && st_has_c(st);
        (Requirement::Q { h }, self.q_successors(below_c))
    }

    /// Next split requirement in priority order: parents before their
    /// children, pairs by index. New parents are gated in the general regime
    /// until every Q on the path has been passed via inf; children require
    /// their parent on the path and not finished via fin. Falls through to
    /// the next Q when nothing is assignable.
    fn next_s(&self, st: &NodeAssignment) -> Option<Requirement> {
        let gate_open = match self.regime {
            Regime::General { .. } => st.q_on_path.iter().all(|q| st.q_satisfied.contains(q)),
            _ => true,
        };
        for i in 0..self.pair_cap() {
            if !st.s_assigned.contains(&(i, None)) {
                let parent_allowed = match self.regime {
                    Regime::General { .. } => gate_open,
                    _ => true,
                };
                if parent_allowed {
                    return Some(Requirement::SParent { i });
                }
                // Parent unavailable: its children are too; move on.
                continue;
            }
            if st.fin_parents.contains(&i) {
                continue;
            }
            for v in 0..self.v_count {
                if !st.s_assigned.contains(&(i, Some(v))) {
                    return Some(Requirement::SChild { i, v });
                }
            }
        }
        None
    }
}

fn st_has_c(st: &NodeAssignment) -> bool {
    st.below_c
}

fn highest_priority_s(reqs: &[Requirement]) -> &Requirement {
    reqs.iter()
        .min_by_key(|r| match r {
            Requirement::SParent { i } => (*i, 0usize),
            Requirement::SChild { i, v } => (*i, v + 1),
            _ => (usize::MAX, usize::MAX),
        })
        .expect("non-empty")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p(s: &str) -> Path {
        Path::parse(s).unwrap()
    }

    #[test]
    fn outcome_tokens_roundtrip() {
        for o in [
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
        ] {
            assert_eq!(Outcome::parse(o.token()).unwrap(), o);
        }
        assert!(Outcome::parse("bogus").is_err());
    }

    #[test]
    fn left_of_uses_first_divergence() {
        assert!(left_of(&p("inf"), &p("h")));
        assert!(left_of(&p("h.c"), &p("h.d")));
        assert!(!left_of(&p("h"), &p("h.c"))); // prefix, not left
        assert!(!left_of(&p("d"), &p("c")));
    }

    #[test]
    fn one_split_rotation() {
        let b = TreeBuilder::new(Regime::OneSplit, 1);
        assert_eq!(b.assign(&Path::root()).req, Requirement::Q { h: 0 });
        assert_eq!(b.assign(&Path::root()).successors, vec![Outcome::Inf, Outcome::C, Outcome::H]);
        assert_eq!(b.assign(&p("h")).req, Requirement::D { i: 0 });
        assert_eq!(b.assign(&p("h.d")).req, Requirement::SChild { i: 0, v: 0 });
        assert_eq!(b.assign(&p("h.d.s")).req, Requirement::Q { h: 1 });
        // A delay-bound node repeats below its own `c` edge, with the `c`
        // option withheld on the repeat.
        let below = b.assign(&p("c"));
        assert_eq!(below.req, Requirement::Q { h: 0 });
        assert_eq!(below.successors, vec![Outcome::Inf, Outcome::H]);
    }

    #[test]
    fn two_split_inserts_pair_node() {
        let b = TreeBuilder::new(Regime::TwoSplit, 1);
        assert_eq!(b.assign(&p("h.d")).req, Requirement::SParent { i: 0 });
        assert_eq!(b.assign(&p("h.d")).successors, vec![Outcome::Blank]);
        assert_eq!(b.assign(&p("h.d.blank")).req, Requirement::Q { h: 1 });
        assert_eq!(
            b.assign(&p("h.d.blank.h.d")).req,
            Requirement::SChild { i: 0, v: 0 }
        );
    }

    #[test]
    fn general_defers_splits_until_bounds_pass() {
        // With no delay bound passed via `inf` on the path, the general
        // regime keeps alternating Q and D.
        let b = TreeBuilder::new(Regime::General { splits: 3 }, 1);
        assert_eq!(b.assign(&p("h.d")).req, Requirement::Q { h: 1 });
        assert_eq!(b.assign(&p("h.d.h.d")).req, Requirement::Q { h: 2 });
    }

    #[test]
    fn switch_g_ladder() {
        use Side::{X, Y};
        let g0 = vec![X, X];
        let g1 = switch_g(&g0);
        let g2 = switch_g(&g1);
        let g3 = switch_g(&g2);
        assert_eq!(g1, vec![X, Y]);
        assert_eq!(g2, vec![Y, X]);
        assert_eq!(g3, vec![Y, Y]);
        assert_eq!(switch_g(&g3), g3);
        assert_eq!(render_g(&g2), "Y0,X1");
    }
}
