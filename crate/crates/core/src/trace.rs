//! Run traces: a header (config + roster, enough to replay), followed by one
//! JSON record per line in a stable field order, so identical runs produce
//! byte-identical files.

use serde::{Deserialize, Serialize};

use crate::adversary::Roster;
use crate::error::ModelError;
use crate::tree::Regime;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConstructionConfig {
    pub regime: Regime,
    pub horizon: u32,
    /// Carried for provenance of sampled rosters; the run itself is
    /// deterministic and never draws randomness.
    #[serde(default)]
    pub seed: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceHeader {
    pub version: u32,
    pub config: ConstructionConfig,
    pub roster: Roster,
}

/// One trace record. Field order is the serialization order.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "ev", rename_all = "kebab-case")]
pub enum Event {
    /// Stage marker; all following records up to the next marker belong to stage `s`.
    Stage { s: u32 },
    /// The path evaluated at this stage, rendered as dot-joined tokens.
    Delta { s: u32, path: String },
    /// Outcome chosen for a node while building the stage path.
    Outcome { s: u32, path: String, o: String },
    /// `x` enters the named set. `reason` qualifies entries into B;
    /// `src` records the emitting node for collector-queue entries.
    Enum {
        s: u32,
        set: String,
        x: u64,
        #[serde(skip_serializing_if = "Option::is_none")]
        reason: Option<String>,
        #[serde(skip_serializing_if = "Option::is_none")]
        src: Option<String>,
    },
    /// A committed strategy put a waiter of node `q` into B.
    Pull {
        s: u32,
        puller: String,
        q: String,
        x: u64,
    },
    /// Node state cleared because the stage path passed to its left.
    Reset { s: u32, path: String },
    /// The node's staging set R was cleared and a new epoch begun.
    RReset { s: u32, path: String, epoch: u32 },
    /// Decided prefix of the node's reserve pool extended through `bound`.
    PinfExtend { s: u32, path: String, bound: u64 },
    /// Side-vector change observed entering `path`.
    Switch {
        s: u32,
        path: String,
        before: String,
        after: String,
    },
    Restrain { s: u32, path: String, x: u64 },
    Unrestrain { s: u32, path: String, x: u64 },
    /// Witness choice by a D- or S-strategy.
    Pick { s: u32, path: String, x: u64 },
    /// S-strategy exhausted its witness options and switched to immediate
    /// pass-through of its test set.
    Commit { s: u32, path: String },
    /// Diagnostic: a strategy had no element available to act on.
    Halt { s: u32, path: String, why: String },
    /// End-of-run summary.
    Final { b: Vec<u64> },
}

impl Event {
    pub fn stage(&self) -> Option<u32> {
        match self {
            Event::Stage { s }
            | Event::Delta { s, .. }
            | Event::Outcome { s, .. }
            | Event::Enum { s, .. }
            | Event::Pull { s, .. }
            | Event::Reset { s, .. }
            | Event::RReset { s, .. }
            | Event::PinfExtend { s, .. }
            | Event::Switch { s, .. }
            | Event::Restrain { s, .. }
            | Event::Unrestrain { s, .. }
            | Event::Pick { s, .. }
            | Event::Commit { s, .. }
            | Event::Halt { s, .. } => Some(*s),
            Event::Final { .. } => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Trace {
    pub header: TraceHeader,
    pub events: Vec<Event>,
}

impl Trace {
    pub fn serialize(&self) -> String {
        let mut out = String::new();
        out.push_str(&serde_json::to_string(&self.header).expect("header serializes"));
        out.push('\n');
        for ev in &self.events {
            out.push_str(&serde_json::to_string(ev).expect("event serializes"));
            out.push('\n');
        }
        out
    }

    pub fn parse(text: &str) -> Result<Trace, ModelError> {
        let mut lines = text.lines().enumerate();
        let (_, first) = lines.next().ok_or(ModelError::TraceParse {
            line: 1,
            msg: "empty trace".into(),
        })?;
        let header: TraceHeader =
            serde_json::from_str(first).map_err(|e| ModelError::TraceParse {
                line: 1,
                msg: e.to_string(),
            })?;
        let mut events = Vec::new();
        for (i, line) in lines {
            if line.trim().is_empty() {
                continue;
            }
            let ev: Event = serde_json::from_str(line).map_err(|e| ModelError::TraceParse {
                line: i + 1,
                msg: e.to_string(),
            })?;
            events.push(ev);
        }
        Ok(Trace { header, events })
    }

    /// Stage-event lines only (header and final summary stripped), for
    /// horizon-extension prefix comparisons.
    pub fn stage_lines(&self) -> Vec<String> {
        self.events
            .iter()
            .filter(|e| e.stage().is_some())
            .map(|e| serde_json::to_string(e).expect("event serializes"))
            .collect()
    }
}

pub mod set_ids {
    //! Names of trace-visible sets.
    use crate::tree::Path;

    pub const B: &str = "B";

    pub fn m(q: &Path) -> String {
        format!("M@{}", q.render())
    }
    pub fn r(q: &Path) -> String {
        format!("R@{}", q.render())
    }
    pub fn collector(q: &Path) -> String {
        format!("Bc@{}", q.render())
    }
    pub fn pinf(q: &Path) -> String {
        format!("Pinf@{}", q.render())
    }
    pub fn v(idx: usize) -> String {
        format!("V{idx}")
    }
    pub fn x_side(idx: usize) -> String {
        format!("X{idx}")
    }
    pub fn y_side(idx: usize) -> String {
        format!("Y{idx}")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tree::Regime;

    fn tiny_trace() -> Trace {
        Trace {
            header: TraceHeader {
                version: 1,
                config: ConstructionConfig {
                    regime: Regime::OneSplit,
                    horizon: 2,
                    seed: 0,
                },
                roster: crate::Roster::default(),
            },
            events: vec![
                Event::Stage { s: 1 },
                Event::Delta {
                    s: 1,
                    path: "h".into(),
                },
                Event::Enum {
                    s: 1,
                    set: "B".into(),
                    x: 4,
                    reason: Some("flood".into()),
                    src: None,
                },
                Event::Final { b: vec![4] },
            ],
        }
    }

    #[test]
    fn serialize_parse_roundtrip() {
        let t = tiny_trace();
        let text = t.serialize();
        let back = Trace::parse(&text).unwrap();
        assert_eq!(back, t);
    }

    #[test]
    fn stage_lines_drop_the_summary() {
        let t = tiny_trace();
        let lines = t.stage_lines();
        assert!(lines.iter().all(|l| !l.contains("\"final\"")));
        assert_eq!(lines.len(), 3);
    }

    #[test]
    fn set_id_rendering() {
        let q = crate::tree::Path::parse("h.d.s").unwrap();
        assert_eq!(set_ids::m(&q), "M@h.d.s");
        assert_eq!(set_ids::pinf(&crate::tree::Path::root()), "Pinf@");
        assert_eq!(set_ids::v(2), "V2");
    }
}
